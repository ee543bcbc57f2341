# Ce fichier permet à Python de reconnaître ce répertoire comme un package